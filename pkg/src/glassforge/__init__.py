"""glassforge: physically based glass-reflection image synthesis.

Renders pixel-aligned (blended, transmission, reflection) triplets from a
glass-slab scene template, plus the screen-space alpha-blend baseline,
overlapping-tile utilities, and 8-bit image quality metrics.
"""

from .alphablend import BlendParams, alpha_blend, gaussian_blur
from .errors import (CoverageError, GlassForgeError, ImageFormatError,
                     ValidationError)
from .imagecore import (EnvMap, LinearImage, SrgbImage, envmap_sample,
                        load_image, resample_lanczos, save_png, srgb_decode,
                        srgb_encode)
from .metrics import (LossWeights, SsimSettings, composite_loss, ms_ssim,
                      psnr, ssim)
from .optics import (GhostTerm, GlassMaterial, absorption_factor,
                     fresnel_unpolarized, ggx_sample, ghost_series,
                     ghost_series_totals, refract_cos)
from .renderer import (RenderSettings, RenderTriple, render_triple,
                       transmitted_shift_px, validate_alignment)
from .scene import (Camera, PlaneTarget, Scene, SceneConfig, camera_ray,
                    intersect_plane, solve_geometry)
from .tiler import TilePlan, plan_tiles, split, stitch

__version__ = "0.1.0"
