import sys
from pathlib import Path

# 📂 Path setup
HERE = Path(__file__).parent
sys.path.insert(0, str(HERE / "backend"))

from app.main import cli  # noqa: E402

if __name__ == "__main__":
    cli()
