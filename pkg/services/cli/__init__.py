"""Interfaz de línea de comandos: python -m services.cli.main"""
