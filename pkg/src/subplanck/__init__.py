"""Sub-Planck phase-space structure and its role in decoherence, on a 1-D grid."""
from .grid import (
    DensityMatrix,
    Displacement,
    GridMismatchError,
    GridSpec,
    WaveFunction,
    WraparoundWarning,
    build_density,
    displace,
    from_momentum,
    inner,
    momentum_moments,
    position_moments,
    pure_density,
    to_momentum,
)
from .states import (
    CompassSpec,
    GaussianPacket,
    SparseSpec,
    make_cat,
    make_compass,
    make_gaussian,
    make_sparse,
    random_sparse_spec,
)
from .wigner import (
    WignerGrid,
    coherence_scale,
    moyal_overlap,
    structure_report,
    tile_area,
    wigner,
)
from .dynamics import (
    ClassicalEnsemble,
    DrivenPendulumParams,
    evolve_classical,
    evolve_quantum,
    lyapunov,
    timescales,
)
from .decoherence import (
    ConditionalShifts,
    TwoStateSystem,
    decay_scan,
    fourier_suppression,
    mixed_suppression,
    reduced_density,
    suppression_factor,
)

__version__ = "0.1.0"
