"""
Servicios de negocio
"""
