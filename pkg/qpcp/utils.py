from __future__ import annotations

import math

from tqdm.auto import tqdm

PROGRESS_BAR_ENABLED = True


def set_progress_bar_enabled(enabled: bool) -> None:
    global PROGRESS_BAR_ENABLED
    PROGRESS_BAR_ENABLED = enabled


class ProgressBar:
    def __init__(self, total, desc=None):
        self.total = total
        self.current = 0
        self.bar = tqdm(total=total, desc=desc, disable=not PROGRESS_BAR_ENABLED or total < 2, leave=False)

    def update_absolute(self, value, total=None):
        if total is not None:
            self.total = total
            self.bar.total = total
        if value > self.total:
            value = self.total
        self.bar.update(value - self.current)
        self.current = value

    def update(self, value):
        self.update_absolute(self.current + value)

    def close(self):
        self.bar.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.close()


def ceil_int(x: float, rel: float = 1e-9) -> int:
    """Ceiling that ignores floating-point overshoot of an exact integer."""
    return int(math.ceil(x - rel * max(1.0, abs(x))))
