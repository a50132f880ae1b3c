import typing as t

from pydantic import BaseModel, Field

from cellarium.warp import constants


class LemmaReport(BaseModel):
    """
    Outcome of checking that every extremum of a single-warp binary landscape lies on the line through both proxies.
    """

    class OffLineExtremum(BaseModel):
        point: t.List[float] = Field(description="Location of the extremum", examples=[[0.5, 1.936]])
        distance_to_line: float = Field(description="Perpendicular distance to the proxy line", examples=[1.936])
        kind: constants.ExtremumKind = Field(description="Minimum or maximum", examples=["minimum"])
        source: constants.ExtremumSource = Field(
            description="Detected on the 2-D grid or on a circle around the opposite proxy", examples=["disk"]
        )

    warp: str = Field(description="Warp applied to both distances", examples=["t^2"])
    warp_monotone: bool = Field(description="Whether the warp was found non-decreasing", examples=[True])
    cell_diagonal: float = Field(description="Grid cell diagonal used as on-line tolerance", examples=[0.0313])
    grid_extrema: int = Field(description="Number of interior grid extrema inspected", examples=[2])
    disk_radii: t.List[float] = Field(description="Radii of the circles checked", examples=[[1.3, 2.9]])
    off_line_extrema: t.List["LemmaReport.OffLineExtremum"] = Field(
        default_factory=list, description="Extrema farther than one cell diagonal from the proxy line"
    )
    verdict: constants.Verdict = Field(description="pass iff no off-line extremum was found", examples=["pass"])


LemmaReport.model_rebuild()


class PropReport(BaseModel):
    """
    Outcome of checking that a piecewise-linear ``f1`` against ``f2 = t`` moves the minimum to ``alpha``.
    """

    argmin_t: float = Field(description="Brute-force minimiser along the outbound ray", examples=[3.0])
    expected_alpha: float = Field(description="Switch point of the warp", examples=[3.0])
    step: float = Field(description="Brute-force sampling step", examples=[0.003])
    slope_below: float = Field(description="Loss slope just below alpha", examples=[-0.0064])
    slope_above: float = Field(description="Loss slope just above alpha", examples=[0.0093])
    sign_changes: int = Field(description="Sign changes of the sampled loss derivative", examples=[1])
    verdict: constants.Verdict = Field(description="Overall verdict", examples=["pass"])

    @property
    def passed(self) -> bool:
        return self.verdict == constants.Verdict.PASS


class ExtremaReport(BaseModel):
    """
    Extrema of an exported landscape, written next to the grid CSV.
    """

    class Extremum(BaseModel):
        x: float = Field(description="Grid x coordinate", examples=[-3.0])
        y: float = Field(description="Grid y coordinate", examples=[0.0])
        loss: float = Field(description="Loss at the grid point", examples=[0.01815])
        distance_to_line: float = Field(description="Perpendicular distance to the proxy line", examples=[0.0])

    warp: str = Field(description="Warp pair expression", examples=["pwl(3,0.65,1.5,1.05) - t"])
    temperature: float = Field(description="Loss temperature", examples=[1.0])
    p_c: t.List[float] = Field(description="Ground-truth proxy", examples=[[0.0, 0.0]])
    p_cprime: t.List[float] = Field(description="Opposite-class proxy", examples=[[4.0, 0.0]])
    resolution: int = Field(description="Grid points per axis", examples=[65])
    cell_diagonal: float = Field(description="Grid cell diagonal", examples=[0.3536])
    minima: t.List["ExtremaReport.Extremum"] = Field(description="Minima; a flat basin counts once")
    maxima: t.List["ExtremaReport.Extremum"] = Field(description="Maxima; a flat ridge counts once")
    outbound_argmin_t: float = Field(
        description="Minimiser of the loss along the ray from p_c away from p_cprime", examples=[3.0]
    )
    verdict: constants.Verdict = Field(
        description="pass iff every extremum lies within one cell diagonal of the proxy line", examples=["pass"]
    )


ExtremaReport.model_rebuild()


class PropertySuiteReport(BaseModel):
    """
    Machine-readable result of the landscape and loss property suite.
    """

    class PropertyResult(BaseModel):
        name: str = Field(description="Property identifier", examples=["lemma_forward"])
        verdict: constants.Verdict = Field(description="Whether the property held", examples=["pass"])
        expected_failure: bool = Field(
            default=False,
            description="The check is a witness that is meant to fail (e.g. a non-monotone warp for the lemma)",
        )
        details: t.Dict[str, t.Any] = Field(default_factory=dict, description="Measured quantities")

        @property
        def ok(self) -> bool:
            """A witness is ok when it fails, every other property when it passes."""
            return (self.verdict == constants.Verdict.FAIL) == self.expected_failure

    seed: int = Field(description="Seed of the random cases", examples=[0])
    resolution: int = Field(description="Grid resolution of the landscape checks", examples=[512])
    properties: t.List["PropertySuiteReport.PropertyResult"] = Field(description="One entry per property")

    @property
    def passed(self) -> bool:
        return all(result.ok for result in self.properties)


PropertySuiteReport.model_rebuild()


class MapAtRResult(BaseModel):
    map_at_r: float = Field(description="Mean average precision at R", examples=[0.5])
    rp: float = Field(description="R-precision", examples=[0.5])
    p_at_1: float = Field(description="Precision at 1", examples=[1.0])
    num_queries: int = Field(description="Queries that contributed", examples=[200])
    skipped: int = Field(description="Queries skipped because their class has a single sample", examples=[0])


class NmiResult(BaseModel):
    value: float = Field(description="Normalised mutual information in [0, 1]", examples=[0.87])
    degenerate: bool = Field(
        default=False, description="All points coincide, so no clustering is possible and the value is 0"
    )


class DtpReport(BaseModel):
    avg_dtp: float = Field(description="Unweighted mean of the per-class distances to proxy", examples=[3.0])
    per_class_dtp: t.Dict[int, float] = Field(description="Mean distance to proxy per class", examples=[{0: 2.0}])


class RetrievalResult(BaseModel):
    """
    Retrieval and clustering quality of a set of embeddings.
    """

    recall_at: t.Dict[int, float] = Field(description="Recall@K per K", examples=[{1: 0.98, 2: 0.99}])
    nmi: float = Field(description="Normalised mutual information of k-means clusters", examples=[0.91])
    map_at_r: float = Field(description="Mean average precision at R", examples=[0.85])
    rp: float = Field(description="R-precision", examples=[0.87])
    p_at_1: float = Field(description="Precision at 1", examples=[0.98])
    avg_dtp: t.Optional[float] = Field(default=None, description="Average distance to proxy", examples=[3.1])

    def to_flat_dict(self) -> t.Dict[str, float]:
        """
        Flat metrics object: ``r_at_<K>`` for every K, then ``nmi``, ``map_at_r``, ``rp``, ``p_at_1`` and ``avg_dtp``
        when known.
        """
        flat = {f"r_at_{k}": value for k, value in sorted(self.recall_at.items())}
        flat.update(nmi=self.nmi, map_at_r=self.map_at_r, rp=self.rp, p_at_1=self.p_at_1)
        if self.avg_dtp is not None:
            flat["avg_dtp"] = self.avg_dtp
        return flat
