# Configuration package: process settings and run-config files
