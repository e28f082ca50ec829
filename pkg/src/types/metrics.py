from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from src.const import REPORT_ROWS


class SliceMetrics(BaseModel):
    """
    Agreement between one predicted and one reference mask.

    Attributes:
        exam_id (str): Exam the slice belongs to.
        slice_index (int): Position in the stack.
        region (str): base, middle, apex or unknown.
        dsc (float): Dice coefficient in [0, 1].
        hd_mm (Optional[float]): Hausdorff distance in mm; None when exactly one mask is empty.
        area_ref_mm2 (float): Reference surface area.
        area_pred_mm2 (float): Predicted surface area.
    """

    exam_id: str
    slice_index: int
    region: str
    dsc: float = Field(ge=0.0, le=1.0)
    hd_mm: Optional[float] = Field(default=None, ge=0.0)
    area_ref_mm2: float = Field(ge=0.0)
    area_pred_mm2: float = Field(ge=0.0)

    @model_validator(mode="after")
    def validate_hd(self) -> "SliceMetrics":
        one_empty = (self.area_ref_mm2 == 0) != (self.area_pred_mm2 == 0)
        if one_empty != (self.hd_mm is None):
            raise ValueError("hd_mm must be undefined exactly when one of the two masks is empty")
        return self


class RegionRow(BaseModel):
    """
    One row of the report. Undefined statistics are None rather than fabricated.

    Attributes:
        region (str): base, middle, apex or overall.
        n_slices (int): Slices aggregated.
        mean_dsc_percent (Optional[float]): Mean Dice × 100.
        mean_hd_mm (Optional[float]): Mean Hausdorff distance over slices where it is defined.
        n_hd_undefined (int): Slices whose Hausdorff distance is undefined.
        pearson_r (Optional[float]): Correlation of reference and predicted areas.
        ba_bias_percent (Optional[float]): Bland–Altman bias of the areas, percent.
        ba_sd_percent (Optional[float]): Standard deviation of the percent differences.
        n_ba_excluded (int): Slices left out of Bland–Altman because both masks are empty.
    """

    region: str
    n_slices: int = 0
    mean_dsc_percent: Optional[float] = None
    mean_hd_mm: Optional[float] = None
    n_hd_undefined: int = 0
    pearson_r: Optional[float] = Field(default=None, ge=-1.0, le=1.0)
    ba_bias_percent: Optional[float] = None
    ba_sd_percent: Optional[float] = None
    n_ba_excluded: int = 0


class RegionReport(BaseModel):
    """
    Base/Middle/Apex/Overall × DSC, HD, r and Bland–Altman bias, plus the Wilcoxon p-value for the overall row.
    """

    rows: Dict[str, RegionRow]
    wilcoxon_p: Optional[float] = None
    wilcoxon_w: Optional[float] = None

    @model_validator(mode="after")
    def validate_rows(self) -> "RegionReport":
        if tuple(self.rows) != REPORT_ROWS:
            raise ValueError(f"Report rows must be exactly {REPORT_ROWS}, got {tuple(self.rows)}")
        return self

    @property
    def overall(self) -> RegionRow:
        return self.rows["overall"]

    def format_row(self, region: str) -> str:
        row = self.rows[region]

        def fmt(value: Optional[float], spec: str) -> str:
            return "n/a" if value is None else format(value, spec)

        bias = (
            "n/a"
            if row.ba_bias_percent is None
            else f"{row.ba_bias_percent:.2f}({fmt(row.ba_sd_percent, '.2f')})"
        )
        return (
            f"{region.capitalize():<8} {fmt(row.mean_dsc_percent, '.2f'):>8} {fmt(row.mean_hd_mm, '.2f'):>8} "
            f"{fmt(row.pearson_r, '.3f'):>7} {bias:>14}"
        )

    def format_table(self) -> str:
        header = f"{'':<8} {'DSC (%)':>8} {'HD (mm)':>8} {'r':>7} {'BA Bias (%)':>14}"
        lines: List[str] = [header] + [self.format_row(region) for region in REPORT_ROWS]
        if self.wilcoxon_p is not None:
            lines.append(f"Wilcoxon signed-rank (pred − ref areas): p = {self.wilcoxon_p:.4g}")
        return "\n".join(lines)
