# -*- coding: utf-8 -*-
from __future__ import annotations

from libs.common.errors import VacotError


class MalformedInput(VacotError):
    code = "MalformedInput"
