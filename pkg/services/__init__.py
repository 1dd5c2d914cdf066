"""
Модуль сервисов: диадическое ядро, движок Уолша, пространства Орлича и построения свидетелей
"""
