# Command-line harness package
