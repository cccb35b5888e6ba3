"""CLI module for semrobust tools."""
