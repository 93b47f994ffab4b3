from pathlib import Path

from bicomb.export_accessor import write_text_atomic
from bicomb.space_builder import space_schema

SCHEMA_PATH = Path("space_spec.schema.json")

write_text_atomic(SCHEMA_PATH, space_schema())

print(f"wrote {SCHEMA_PATH}")
