from anisolab.schemas.grid import GridFunction, GridSpec, SpectralWindow, SpectrumFunction
from anisolab.schemas.norms import BesovProfile, NormParams
from anisolab.schemas.leaves import AdmissibleLeaf, LeafFamily, LeafFamilyConfig, LeafFunction, UnstableCone
from anisolab.schemas.reports import AnisoNormReport, KernelProbe, ParaproductTerms, ProductProbe
from anisolab.schemas.experiment import CorpusSpec, ExperimentConfig, IndicatorSpec, ResultRecord

__all__ = [
    "GridFunction", "GridSpec", "SpectralWindow", "SpectrumFunction",
    "BesovProfile", "NormParams",
    "AdmissibleLeaf", "LeafFamily", "LeafFamilyConfig", "LeafFunction", "UnstableCone",
    "AnisoNormReport", "KernelProbe", "ParaproductTerms", "ProductProbe",
    "CorpusSpec", "ExperimentConfig", "IndicatorSpec", "ResultRecord",
]
