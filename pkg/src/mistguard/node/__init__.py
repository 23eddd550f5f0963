"""Mist-node service, robot-controller simulator and their wire protocol."""
from mistguard.node.config import ConfigError, NodeConfig, load_config, parse_config
from mistguard.node.machine_sim import MachineSim, read_log, run_machine_sim
from mistguard.node.protocol import ProtocolError, status_query
from mistguard.node.service import Node, NodeAbort, run_node
from mistguard.node.sources import DirectorySource, FrameSourceError, ListSource, SyntheticSource

__all__ = [
    "ConfigError", "DirectorySource", "FrameSourceError", "ListSource", "MachineSim", "Node",
    "NodeAbort", "NodeConfig", "ProtocolError", "SyntheticSource", "load_config",
    "parse_config", "read_log", "run_machine_sim", "run_node", "status_query",
]
