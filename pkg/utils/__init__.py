"""
Модуль утилит вывода
"""
