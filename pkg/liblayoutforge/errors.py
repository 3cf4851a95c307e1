"""
 layoutforge: exception hierarchy

 Copyright (C) 2026  layoutforge developers

 This work is licensed under the terms of the GNU GPL, version 3.  See
 the LICENSE file in the top-level directory.
"""


class LayoutForgeError(Exception):
    """Base error"""


class ValidationError(LayoutForgeError):
    """Document tree violates a containment or ordering invariant"""


class ConfigError(LayoutForgeError):
    """Invalid rule configuration"""


class InsufficientInk(LayoutForgeError):
    """Not enough ink to estimate page skew"""


class DegenerateQuad(LayoutForgeError):
    """Page quadrilateral could not be established"""


class TooFewComponents(LayoutForgeError):
    """Not enough connected components for line statistics"""


class OverlapConflict(LayoutForgeError):
    """Two detectors claimed the same text line"""


class GridInconsistent(LayoutForgeError):
    """Ruling intersections do not form a rectilinear grid"""


class NoInk(LayoutForgeError):
    """Word box contains no ink"""


class RangeError(LayoutForgeError, ValueError):
    """Class id outside the alphabet"""


class AlphabetError(LayoutForgeError):
    """Alphabet mapping file is invalid"""


class AtlasError(LayoutForgeError):
    """Glyph atlas is incomplete or unreadable"""


class EmptyGroundTruth(LayoutForgeError, ValueError):
    """Ground truth string is empty"""


class EmptyInput(LayoutForgeError, ValueError):
    """No input items given"""


class OverlapInSpec(LayoutForgeError):
    """Synthetic page elements overlap or leave the page"""


class UnsupportedFormat(LayoutForgeError):
    """Source format is not png or pdf"""


class CorruptSource(LayoutForgeError):
    """Source bytes do not parse as the declared format"""


class RasterizeFailure(LayoutForgeError):
    """Page could not be converted into an image"""


class EmptyDocument(RasterizeFailure):
    """Document has no pages"""


class UnknownJob(LayoutForgeError, KeyError):
    """Job id is not known"""


class NotReady(LayoutForgeError):
    """Job result requested before the job is done"""

    def __init__(self, message, reason=None):
        super().__init__(message)
        self.reason = reason


class MissingCrop(LayoutForgeError):
    """Restored image crop missing for a region"""


class ServiceError(LayoutForgeError):
    """Error response of the job service"""

    def __init__(self, message, status=0, reason=None):
        super().__init__(message)
        self.status = status
        self.reason = reason
