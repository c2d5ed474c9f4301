"""Discrete tomography with DART and multi-channel DART."""
from .dart import DartParams, DartTrace, arm_baseline_run, dart_run, detect_boundary, mcdart_run, sample_free_set
from .metrics import PixelErrorReport, class_counts, pixel_error
from .phantom import PhantomSpec, SynthesizedProblem, disk_mask, generate_phantom, generate_spectra, synthesize
from .projector import (GridSpec, MatrixFreeProjector, ParallelGeometry, ProjectionOperator, Representation,
                        SparseProjector, apply, apply_adjoint, build_operator, restrict)
from .segmentation import MaterialSpectra, segment_multi, segment_single
from .solvers import masked_arm, residual_sinogram, sirt_run

__version__ = "0.1.0"
