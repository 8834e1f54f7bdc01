"""
Exception hierarchy for the pseudo-labeling toolkit
"""


class PseudoLabelError(Exception):
    """Base class for every domain error raised by the package"""


class ConfigError(PseudoLabelError):
    """Invalid configuration value or config file"""


class MissingFile(PseudoLabelError):
    """An input file referenced by a manifest or flag does not exist"""

    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"MissingFile: {self.path}")


# KITTI formats

class MissingCalibKey(PseudoLabelError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"calibration key {key!r} not found")


class MalformedCalib(PseudoLabelError):
    pass


class MalformedLabelLine(PseudoLabelError):
    def __init__(self, line_no, reason=""):
        self.line_no = line_no
        self.reason = reason
        msg = f"malformed label line {line_no}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class MalformedCloud(PseudoLabelError):
    pass


class MalformedDetections(PseudoLabelError):
    pass


class InvalidScore(MalformedDetections):
    def __init__(self, score, index=None):
        self.score = score
        self.index = index
        super().__init__(f"score {score!r} outside [0, 1] (detection {index})")


class MalformedManifest(PseudoLabelError):
    pass


# Geometry / evaluation

class EmptyInput(PseudoLabelError):
    pass


class EmptyMatchSet(PseudoLabelError):
    pass


class FrameSetMismatch(PseudoLabelError):
    def __init__(self, only_left, only_right):
        self.only_left = sorted(only_left)
        self.only_right = sorted(only_right)
        super().__init__(
            f"frame sets differ: only in predictions {self.only_left}, "
            f"only in ground truth {self.only_right}"
        )


# Pipelines

class MissingDetections(PseudoLabelError):
    def __init__(self, frame_id):
        self.frame_id = frame_id
        super().__init__(f"no detection file for unlabeled frame {frame_id!r}")


class PlacementFailed(PseudoLabelError):
    pass
