"""
Utilidades generales
"""
