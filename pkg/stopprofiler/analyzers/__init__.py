# Analyzers Package
