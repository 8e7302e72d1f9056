"""Subcommand plugins, discovered by tandem_commands.CommandManager"""
