# -*- coding: utf-8 -*-
"""Adam（numpy，玩具规模）

step() 做最小化；最大化目标时传入负梯度。
"""

from __future__ import annotations

from typing import Optional

import numpy as np


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self._m: Optional[np.ndarray] = None
        self._v: Optional[np.ndarray] = None

    def step(self, params: np.ndarray, grad: np.ndarray, lr: Optional[float] = None) -> np.ndarray:
        if self._m is None or self._m.shape != grad.shape:
            self._m = np.zeros_like(grad)
            self._v = np.zeros_like(grad)
        self.t += 1
        self._m = self.beta1 * self._m + (1.0 - self.beta1) * grad
        self._v = self.beta2 * self._v + (1.0 - self.beta2) * grad**2
        m_hat = self._m / (1.0 - self.beta1**self.t)
        v_hat = self._v / (1.0 - self.beta2**self.t)
        step_lr = self.lr if lr is None else float(lr)
        return params - step_lr * m_hat / (np.sqrt(v_hat) + self.eps)
