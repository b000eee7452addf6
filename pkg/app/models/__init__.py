"""
Modelos y schemas de datos
"""
