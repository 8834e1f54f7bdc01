"""
Mathematical utility functions
"""
import math


def cross(x1, y1, x2, y2):
    """2D cross product"""
    return x1 * y2 - y1 * x2


def wrap_angle(angle):
    """Wrap to [-pi, pi)"""
    return (angle + math.pi) % (2 * math.pi) - math.pi


def canonical_yaw(angle):
    """Wrap to [-pi/2, pi/2): a box axis has no front/back"""
    return (angle + math.pi / 2) % math.pi - math.pi / 2
