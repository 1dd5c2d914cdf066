"""
Исключения вычислительного ядра
"""


class WalshError(Exception):
    """Базовая ошибка пакета"""
    pass


class PreconditionError(WalshError, ValueError):
    """Нарушено предусловие операции (например, "not nested")"""
    pass


class InvariantViolation(WalshError):
    """
    Проверка неравенства/тождества из конструкции не прошла

    Args:
        tag: Тег проверяемого соотношения (например, "spectrum_localized", "e_measure")
        message: Подробности
    """

    def __init__(self, tag: str, message: str):
        super().__init__(f"[{tag}] {message}")
        self.tag = tag


class ConfigError(WalshError):
    """Некорректная конфигурация запуска"""
    pass
