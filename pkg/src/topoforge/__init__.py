"""Topological shape analysis of signed distance volumes.

Cubical sublevel persistence, diagram tooling, forward kernels of the latent
generative stack, and generative-evaluation metrics, plus a CLI to wire them
into reproducible pipelines.
"""

__version__ = "0.1.0"

from .cubical import (  # noqa: F401
    FilteredCubicalComplex,
    PersistenceDiagramSet,
    PersistencePair,
    betti_at,
    build_filtration,
    compute_persistence,
    compute_persistence_naive,
    euler_characteristic_at,
)
from .diagram import (  # noqa: F401
    PersistencePointSet,
    bottleneck_distance,
    edit_toward_diagonal,
    persistence_image,
    persistence_landscape,
    to_points,
    top_k,
    wasserstein_distance,
)
from .field import (  # noqa: F401
    Ball,
    Box,
    Cylinder,
    Intersection,
    Rotate,
    Scale,
    SdfScene,
    SolidTorus,
    Subtraction,
    Translate,
    Union,
    eval_sdf,
    normalize_scene,
    rasterize,
    sample_surface,
)
from .grid import VolumeGrid, occupancy, read_vgrd, write_vgrd  # noqa: F401
