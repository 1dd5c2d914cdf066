"""
Тесты для walsh-divergence
"""
