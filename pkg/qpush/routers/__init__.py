# API routers package
from qpush.exceptions import InvalidGraph


def reject_file_graphs(*presets: str) -> None:
    """Refuse 'custom:' presets, which name files on the server."""
    for preset in presets:
        if preset.strip().lower().startswith("custom:"):
            raise InvalidGraph(f"Graph '{preset}' is not available over HTTP; use ring, g1, g2 or complete")
