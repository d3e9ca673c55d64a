"""Servicios de RetroDraft: decodificación especulativa basada en recuperación"""
