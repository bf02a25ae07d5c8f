"""
Validate the bundled experiment configs without running them.
Checks the package layout, that every config under configs/ passes schema
validation, and that every experiment kind has at least one config.
"""
import json
import sys
from pathlib import Path

from src.errors import ConfigError
from src.main import COMMANDS
from src.types import load_config

CONFIG_DIR = Path("configs")


def validate_json_file(filepath: Path) -> tuple[bool, str]:
    """Validate a JSON file exists and decodes."""
    if not filepath.exists():
        return False, f"{filepath} not found"
    try:
        json.loads(filepath.read_text(encoding="utf-8"))
        return True, f"✓ {filepath.name} is valid JSON"
    except json.JSONDecodeError as e:
        return False, f"{filepath.name} has invalid JSON: {e}"


def validate_file_structure() -> tuple[bool, str]:
    """Validate required files exist."""
    required_files = [
        Path("README.md"),
        Path("pyproject.toml"),
        Path("src/main.py"),
        Path("src/protocol.py"),
        CONFIG_DIR,
    ]
    missing = [str(p) for p in required_files if not p.exists()]
    if missing:
        return False, f"Missing required files: {', '.join(missing)}"
    return True, "✓ All required files exist"


def validate_config(filepath: Path) -> tuple[bool, str]:
    """Validate one config against the experiment schema."""
    success, message = validate_json_file(filepath)
    if not success:
        return False, message
    try:
        config = load_config(filepath)
    except ConfigError as e:
        return False, f"{filepath.name}: {e.key or '<root>'}: {e.detail}"
    return True, f"✓ {filepath.name} ({config.kind})"


def validate_coverage(paths: list[Path]) -> tuple[bool, str]:
    """Every experiment kind needs a bundled config."""
    kinds = set()
    for path in paths:
        try:
            kinds.add(load_config(path).kind)
        except ConfigError:
            continue
    missing = sorted(set(COMMANDS.values()) - kinds)
    if missing:
        return False, f"No bundled config for kinds: {missing}"
    return True, f"✓ All {len(kinds)} experiment kinds have a config"


def validate_output_dirs(paths: list[Path]) -> tuple[bool, str]:
    """Bundled configs must not share an output directory."""
    seen: dict[str, str] = {}
    for path in paths:
        try:
            out = str(load_config(path).output_dir)
        except ConfigError:
            continue
        if out in seen:
            return False, f"{path.name} and {seen[out]} both write to {out}"
        seen[out] = path.name
    return True, "✓ Output directories are distinct"


def main() -> int:
    """Run all validations."""
    print("=" * 60)
    print("Experiment Config Validation")
    print("=" * 60)
    print()

    paths = sorted(CONFIG_DIR.glob("*.json"))
    validations = [("File Structure", validate_file_structure)]
    validations += [(path.name, lambda path=path: validate_config(path)) for path in paths]
    validations += [
        ("Kind coverage", lambda: validate_coverage(paths)),
        ("Output directories", lambda: validate_output_dirs(paths)),
    ]

    all_passed = True
    for name, validator in validations:
        print(f"Validating {name}...")
        success, message = validator()
        print(f"  {message}")
        if not success:
            all_passed = False
        print()

    print("=" * 60)
    if all_passed:
        print("✓ All validations passed!")
        return 0
    print("✗ Some validations failed. Please fix the issues above.")
    return 1


if __name__ == "__main__":
    sys.exit(main())
