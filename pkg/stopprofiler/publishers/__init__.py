# Publishers Package
