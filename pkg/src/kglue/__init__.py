"""Glue finite Kuranishi atlases into weighted branched manifolds and count perturbed zeros."""

from .atlas import KuranishiAtlas, validate_atlas
from .collar import build_collars, check_collars
from .errors import KGlueError
from .examples import get_example
from .gluing import GluedCategory, build_glued, check_category
from .reduction import build_overlap_cover, build_reduction, check_compatibility
from .report import Report
from .vfc import count_zeros, euler_number, perturb, virtual_count

__version__ = "0.1.0"

__all__ = [
    "KGlueError", "KuranishiAtlas", "GluedCategory", "Report",
    "build_collars", "build_glued", "build_overlap_cover", "build_reduction",
    "check_category", "check_collars", "check_compatibility", "count_zeros",
    "euler_number", "get_example", "perturb", "validate_atlas", "virtual_count",
]
