from pydantic_settings import BaseSettings
from typing import List

class Settings(BaseSettings):
    # Runner
    WORKERS: int = 1
    SEED: int = 20240611
    OUTPUT_DIR: str = "results"
    OUTPUT_FORMAT: str = "csv"
    LOG_LEVEL: str = "INFO"

    # Verdicts
    BOUNDED_SLOPE: float = 0.05
    DIVERGENT_SLOPE: float = 0.2
    CONTRACT_MARGIN: float = 0.125
    DIVERGENCE_MARGIN: float = 0.25
    DRIFT_TOL: float = 0.10
    YOUNG_SLACK: float = 1.1

    # Norm defaults
    SMOOTHNESS_R: float = 3.0
    CHART_BOUND: float = 2.0

    # Leaf validation
    CHORD_MARGIN_DEG: float = 5.0
    CHORD_PAIRS: int = 10000

    # Random (f, g) pairs per paraproduct check
    LEMMA_PAIRS: int = 20

    # Numerical tolerances
    SUPPORT_TOL: float = 1e-12
    BAND_LIMIT_TOL: float = 1e-10
    KERNEL_ZERO_TOL: float = 1e-10
    KERNEL_FLOOR: float = 1e-13

    # Comma separated list of corpus kinds used when a config omits them
    DEFAULT_CORPUS_KINDS: str = "gaussian,wave_packet_aligned,wave_packet_transverse,plane_wave_mix"

    @property
    def default_corpus_kinds(self) -> List[str]:
        return [kind.strip() for kind in self.DEFAULT_CORPUS_KINDS.split(",") if kind.strip()]

    class Config:
        env_file = ".env"
        env_prefix = "ANISOLAB_"

settings = Settings()
