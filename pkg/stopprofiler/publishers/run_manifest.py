# Run Manifest Module
# Every CLI command records what it read, wrote and with which parameters.

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Union

from stopprofiler import __version__
from stopprofiler.core.errors import DataError
from stopprofiler.publishers.csv_exporter import read_yaml, write_yaml

MANIFEST_SUFFIX = ".manifest.yaml"


@dataclass
class RunManifest:
    """Reproducibility record written next to a command's outputs"""
    command: str
    argv: List[str]
    inputs: Dict[str, Any] = field(default_factory=dict)
    outputs: Dict[str, Any] = field(default_factory=dict)
    parameters: Dict[str, Any] = field(default_factory=dict)
    version: str = __version__

    def to_dict(self) -> Dict[str, Any]:
        return {
            'command': self.command,
            'argv': list(self.argv),
            'inputs': dict(self.inputs),
            'outputs': dict(self.outputs),
            'parameters': dict(self.parameters),
            'version': self.version
        }

    def write(self, path: Union[str, Path]) -> Path:
        return write_yaml(self.to_dict(), path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        data = read_yaml(path)
        if not isinstance(data, dict) or "command" not in data or "argv" not in data:
            raise DataError(f"{path}: not a run manifest")
        return cls(
            command=str(data["command"]),
            argv=[str(a) for a in data["argv"]],
            inputs=data.get("inputs") or {},
            outputs=data.get("outputs") or {},
            parameters=data.get("parameters") or {},
            version=str(data.get("version", ""))
        )


def manifest_path_for(output: Union[str, Path]) -> Path:
    """`<output>.manifest.yaml`, or `<dir>/manifest.yaml` for directory outputs"""
    output = Path(output)
    if output.is_dir():
        return output / "manifest.yaml"
    return output.with_name(output.name + MANIFEST_SUFFIX)
