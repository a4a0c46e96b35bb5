"""Angular bispectrum tools for isotropic random fields on the sphere."""
from .errors import AliasingError, DomainError, NumericGuardError, ParityError, ResourceGuardError
from .estimators import (
    BispectrumOrdinate,
    PowerSpectrum,
    delta_factor,
    estimate_bispectrum,
    estimate_cl,
    estimate_spectrum,
    moment_I2,
    moment_I4,
    moment_I4_offdiag,
    moment_Ihat,
    normalized_bispectrum,
    normalized_bispectrum_hat,
    uhat_mixed_moment,
)
from .gaussianity import TestConfig, TestProcessPath, critical_value, j_process, p_value_sup
from .sht import GridSpec, HarmonicCoefficients, SphereGrid, analyze, synthesize
from .simulation import (
    NonGaussianConfig,
    SpectrumModel,
    StudyManifest,
    make_nongaussian_alm,
    run_power_study,
    run_size_study,
    sachs_wolfe_bispectrum,
    sample_gaussian_alm,
)
from .wigner import gaunt, wigner_3j, wigner_6j

__version__ = "0.1.0"
