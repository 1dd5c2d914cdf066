"""
Модуль обработчиков подкоманд CLI
"""
