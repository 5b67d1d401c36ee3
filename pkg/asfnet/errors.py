#!/usr/bin/env python
# -*- coding: utf-8 -*-
#
# ASFNet: lightweight crowd counting with adjacent feature fusion
#
# Copyright 2024 ASFNet contributors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#

"""Exception types raised across the package"""


class AsfnetError(Exception):
    pass


class ShapeError(AsfnetError, ValueError):
    def __init__(self, message, axis=None):
        super(ShapeError, self).__init__(message)
        self.axis = axis


class SpecError(AsfnetError, ValueError):
    pass


class ArgumentError(AsfnetError, ValueError):
    pass


class UsageError(AsfnetError):
    pass


class FormatError(AsfnetError, ValueError):
    def __init__(self, message, offset=None, path=None):
        if offset is not None:
            message = "%s (at byte offset %d)" % (message, offset)
        if path is not None:
            message = "%s: %s" % (path, message)
        super(FormatError, self).__init__(message)
        self.offset = offset
        self.path = path


class NumericError(AsfnetError, ArithmeticError):
    def __init__(self, message, name=None):
        if name is not None:
            message = "%s [%s]" % (message, name)
        super(NumericError, self).__init__(message)
        self.name = name


class DivergenceError(NumericError):
    def __init__(self, message, checkpoint=None):
        super(DivergenceError, self).__init__(message)
        self.checkpoint = checkpoint
