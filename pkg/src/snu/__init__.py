"""Computable calculus of the multiscale sequence spaces S^nu."""

from snu.profile import NEG_INF, POS_INF, Profile, ProfileError, Segment

__version__ = "0.1.0"

__all__ = ["NEG_INF", "POS_INF", "Profile", "ProfileError", "Segment"]
