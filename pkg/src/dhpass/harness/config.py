"""INI-style deployment config, stored as ``deployment.ini`` in the state dir."""
from __future__ import annotations

import configparser
import json
from pathlib import Path

from ..health import PolicyRegistry, default_policies
from .deployment import DeploymentConfig

CONFIG_NAME = "deployment.ini"
POLICIES_NAME = "policies.json"


def write_config(state_dir: Path, config: DeploymentConfig) -> Path:
    state_dir.mkdir(parents=True, exist_ok=True)
    cp = configparser.ConfigParser()
    cp["deployment"] = {
        "n": str(config.n),
        "transport": config.transport,
        "host": config.host,
        "base_port": str(config.base_port),
        "session_ttl": str(config.session_ttl),
        "durable": "yes" if config.durable else "no",
    }
    cp["reader"] = {
        "window": str(config.reader_window),
        "session_timeout": str(config.reader_session_timeout),
    }
    if config.seed is not None:
        cp["deployment"]["seed"] = str(config.seed)
    path = state_dir / CONFIG_NAME
    with open(path, "w", encoding="utf-8") as fh:
        cp.write(fh)
    (state_dir / POLICIES_NAME).write_text(json.dumps(config.policies.to_json(), indent=2))
    return path


def read_config(state_dir: Path, *, keep_seed: bool = False) -> DeploymentConfig:
    """Load a deployment config. The seed only drives setup; later commands
    run on system entropy unless ``keep_seed`` is set, so that repeated CLI
    invocations never replay the same nonces."""
    path = state_dir / CONFIG_NAME
    if not path.exists():
        raise FileNotFoundError(f"no {CONFIG_NAME} in {state_dir}; run setup first")
    cp = configparser.ConfigParser()
    cp.read(path, encoding="utf-8")
    d = cp["deployment"]
    r = cp["reader"] if cp.has_section("reader") else {}
    pol_path = state_dir / POLICIES_NAME
    policies = PolicyRegistry.from_json(json.loads(pol_path.read_text())) if pol_path.exists() else default_policies()
    return DeploymentConfig(
        n=d.getint("n"),
        seed=d.get("seed") if keep_seed else None,
        policies=policies,
        transport=d.get("transport", "local"),
        host=d.get("host", "127.0.0.1"),
        base_port=d.getint("base_port", 0),
        state_dir=state_dir,
        session_ttl=d.getint("session_ttl", 120),
        reader_window=int(r.get("window", 120)),
        reader_session_timeout=int(r.get("session_timeout", 180)),
        durable=d.getboolean("durable", True),
    )
