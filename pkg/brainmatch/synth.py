"""
Synthetic workload module for the brainmatch pipeline.

Generates a deterministic component set and network template in place of a
real ICA decomposition. The template is a sum of seeded Gaussian bumps; each
component is independent unit-variance noise, except the planted component,
which is the template plus noise_sigma times its noise.

Every random stream comes from a Philox counter-based generator keyed by
(seed, stream id), so component i is the same however many components are
generated or in which order.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from brainmatch.config import N_COMPONENTS, NOISE_SIGMA, SEED, DIMS_TEXT, TEMPLATE_THRESHOLD, parse_dims
from brainmatch.metrics import Template
from brainmatch.nifti_io import Volume

# Configure logging
logger = logging.getLogger(__name__)

TEMPLATE_STREAM = 0
COMPONENT_STREAM = 1

MIN_BUMPS = 3
MAX_BUMPS = 5


class InvalidSpec(Exception):
    """Raised when a SynthSpec violates its invariants."""

    pass


class SynthSpec(BaseModel):
    """Parameters of a synthetic component set."""

    model_config = ConfigDict(frozen=True)

    seed: int = SEED
    n_components: int = N_COMPONENTS
    dims: Tuple[int, int, int] = parse_dims(DIMS_TEXT)
    noise_sigma: float = NOISE_SIGMA
    planted_index: Optional[int] = None
    template_threshold: float = TEMPLATE_THRESHOLD
    spacing: Tuple[float, float, float] = (2.0, 2.0, 2.0)


def validate_spec(spec: SynthSpec) -> None:
    """
    Raises:
        InvalidSpec: Listing every violated invariant
    """
    errors = []
    if spec.n_components < 1:
        errors.append(f"n_components must be >= 1, got: {spec.n_components}")
    if min(spec.dims) < 1:
        errors.append(f"dims must be positive, got: {spec.dims}")
    if not np.isfinite(spec.noise_sigma) or spec.noise_sigma < 0:
        errors.append(f"noise_sigma must be finite and non-negative, got: {spec.noise_sigma}")
    if spec.planted_index is not None and not 0 <= spec.planted_index < spec.n_components:
        errors.append(
            f"planted_index must be in [0, {spec.n_components}), got: {spec.planted_index}"
        )
    if not np.isfinite(spec.template_threshold):
        errors.append(f"template_threshold must be finite, got: {spec.template_threshold}")
    if errors:
        raise InvalidSpec("; ".join(errors))


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox stream for (seed, *key)."""
    sequence = np.random.SeedSequence(entropy=seed & (2**64 - 1), spawn_key=key)
    return np.random.Generator(np.random.Philox(sequence))


def template_pattern(spec: SynthSpec) -> np.ndarray:
    """
    Sum of 3 to 5 Gaussian bumps on the (nx, ny, nz) grid.

    Centres fall in the middle half of each axis; widths are 8-20% of the
    axis length; amplitudes are in [1, 3].
    """
    rng = stream(spec.seed, TEMPLATE_STREAM)
    dims = np.asarray(spec.dims, dtype=np.float64)
    grid = np.meshgrid(*(np.arange(n, dtype=np.float64) for n in spec.dims), indexing="ij")

    pattern = np.zeros(spec.dims, dtype=np.float64)
    for _ in range(int(rng.integers(MIN_BUMPS, MAX_BUMPS + 1))):
        centre = rng.uniform(0.25, 0.75, size=3) * (dims - 1)
        width = np.maximum(rng.uniform(0.08, 0.20, size=3) * dims, 0.5)
        amplitude = rng.uniform(1.0, 3.0)
        exponent = sum(((g - c) / w) ** 2 for g, c, w in zip(grid, centre, width))
        pattern += amplitude * np.exp(-0.5 * exponent)
    return pattern


def generate(spec: SynthSpec) -> Tuple[List[Volume], Template]:
    """
    Generates components labelled "comp_<i>" and the template.

    Returns:
        Tuple[List[Volume], Template]: Components in index order and the template

    Raises:
        InvalidSpec: If the spec violates its invariants
    """
    validate_spec(spec)
    nx, ny, nz = spec.dims
    n_voxels = nx * ny * nz

    template_volume = Volume.from_array(template_pattern(spec), spec.spacing, "template")
    template = Template(template_volume, spec.template_threshold)

    components = []
    for index in range(spec.n_components):
        noise = stream(spec.seed, COMPONENT_STREAM, index).standard_normal(n_voxels)
        if index == spec.planted_index:
            data = template_volume.data + spec.noise_sigma * noise if spec.noise_sigma else template_volume.data
        else:
            data = noise
        components.append(Volume(nx, ny, nz, data, spec.spacing, f"comp_{index}"))

    logger.info(
        f"Generated {spec.n_components} component(s) of {spec.dims} "
        f"(seed={spec.seed}, planted={spec.planted_index}, sigma={spec.noise_sigma})"
    )
    return components, template
