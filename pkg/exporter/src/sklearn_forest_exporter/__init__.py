from .exporter import ExportError, ExportOptions, export_dataset, export_model
from .schema_predict import load_schema, predict_classes, predict_schema

__version__ = "0.1.0"
