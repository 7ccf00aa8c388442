"""Medical order extraction from doctor-patient dialogue, with an evaluation harness."""

from orderpipe.orders import MedicalOrder, OrderType, PostprocessConfig, postprocess_orders
from orderpipe.transcript import Encounter, Speaker, Transcript, Turn, load_dataset, parse_encounter

__version__ = "0.1.0"

__all__ = [
    "Encounter",
    "MedicalOrder",
    "OrderType",
    "PostprocessConfig",
    "Speaker",
    "Transcript",
    "Turn",
    "load_dataset",
    "parse_encounter",
    "postprocess_orders",
]
