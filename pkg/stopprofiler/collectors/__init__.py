# Collectors Package
