"""
Command line: subcommands, experiment orchestration and plot emission.
"""
