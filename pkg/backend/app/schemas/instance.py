from typing import Optional

from pydantic import BaseModel, Field, model_validator


class MeasureSpec(BaseModel):
    """Either a piecewise density (breakpoints + densities) or samples to histogram."""

    breakpoints: Optional[list[float]] = None
    densities: Optional[list[float]] = None
    normalize: bool = False
    samples: Optional[list[float]] = None
    samples_file: Optional[str] = None
    bin_count: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def check_source(self):
        piecewise = self.breakpoints is not None or self.densities is not None
        sampled = self.samples is not None or self.samples_file is not None
        if piecewise == sampled:
            raise ValueError("give either breakpoints/densities or samples/samples_file")
        if piecewise and (self.breakpoints is None or self.densities is None):
            raise ValueError("breakpoints and densities go together")
        if sampled and self.bin_count is None:
            raise ValueError("bin_count is required with samples")
        return self


class InstanceFile(BaseModel):
    mu: MeasureSpec
    nu: MeasureSpec
    label: Optional[str] = None
