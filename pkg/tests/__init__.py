"""
Tests del sistema
"""
