"""Gradient anomaly maps for crossing, touching and overlapping instances."""

from .fields import FieldStack, InstanceField, build_field_stack, centroid, instance_field, radial_angle_map, radial_distance_map
from .gamm import (
    AnomalyMap,
    GammConfig,
    generate_joint_map,
    gradient_anomaly_maps,
    normalize_and_scale,
    per_instance_maps,
    window_is_active,
    window_sigma,
)
from .losses import LossBreakdown, ProbMap, gradient_anomaly_loss, mask_refinement_loss, pixel_ce, total_loss
from .metrics import InstanceSet, MetricReport, aji, dice_object, evaluate, f1_at_iou, iou, map_over_thresholds
from .scene import (
    InstanceMask,
    Scene,
    SceneError,
    ShapeSpec,
    load_label_map,
    load_manifest,
    rasterize,
    save_manifest,
    synth_scene,
)

__version__ = "0.1.0"
