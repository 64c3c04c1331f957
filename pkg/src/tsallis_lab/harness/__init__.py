"""Command-line harness: configs, seeding, experiment runs and verification suites."""
