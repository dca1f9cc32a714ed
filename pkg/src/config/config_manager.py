"""
配置管理模块
负责加载、验证和管理应用级配置（日志、输出目录、网络默认值、探针、sweep）
单次实验的参数见 run_config
"""

import os
import copy
import logging
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_FILE = 'config.yaml'

DEFAULTS: Dict[str, Any] = {
    'logging': {
        'level': 'INFO',
        'format_type': 'text',
        'format': '[%(asctime)s] %(levelname)s - %(name)s - %(message)s',
        'file': None,
        'max_size_mb': 10,
        'backup_count': 5,
    },
    'output': {
        'dir': 'out',
    },
    'network': {
        'bn_eps': 1e-5,
        'bn_momentum': 0.1,
    },
    'probe': {
        'batch_size': 4096,
        'hessian_k': 1000,
    },
    'sweep': {
        'seeds': 3,
        'max_workers': 2,
    },
}

# 环境变量 -> (配置路径, 类型)
ENV_OVERRIDES = {
    'GRADFLOW_OUT': ('output.dir', str),
    'LOG_LEVEL': ('logging.level', str),
    'LOG_FORMAT': ('logging.format_type', str),
    'LOG_FILE': ('logging.file', str),
    'GRADFLOW_SWEEP_WORKERS': ('sweep.max_workers', int),
}


def _deep_merge(base: Dict, override: Dict) -> Dict:
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class ConfigManager:
    """配置管理器 - 统一管理应用级配置项"""

    _instance = None
    _config: Dict[str, Any] = {}

    def __new__(cls, config_file: Optional[str] = None):
        """单例模式"""
        if cls._instance is None:
            cls._instance = super(ConfigManager, cls).__new__(cls)
        return cls._instance

    def __init__(self, config_file: Optional[str] = None):
        """初始化配置管理器"""
        if not self._config or config_file is not None:
            self._load_config(config_file or DEFAULT_CONFIG_FILE)

    @classmethod
    def reload(cls, config_file: Optional[str] = None) -> "ConfigManager":
        """丢弃已加载的配置并重新读取（环境变量变化后使用）"""
        cls._config = {}
        instance = cls()
        instance._load_config(config_file or DEFAULT_CONFIG_FILE)
        return instance

    def _load_config(self, config_file: str):
        """加载所有配置"""
        # 1. 加载环境变量
        load_dotenv('.env')

        # 2. 加载YAML配置文件
        yaml_config: Dict[str, Any] = {}
        if os.path.exists(config_file):
            with open(config_file, 'r', encoding='utf-8') as f:
                yaml_config = yaml.safe_load(f) or {}
        else:
            logger.warning(f"配置文件 {config_file} 不存在，使用默认配置")

        type(self)._config = self._merge_configs(_deep_merge(DEFAULTS, yaml_config))
        self._validate_config()
        logger.debug("配置加载完成")

    def _load_from_env(self) -> Dict[str, Any]:
        """只收集已设置的环境变量"""
        overrides: Dict[str, Any] = {}
        for name, (path, kind) in ENV_OVERRIDES.items():
            raw = os.getenv(name)
            if raw is None or raw == '':
                continue
            try:
                value = kind(raw)
            except ValueError:
                logger.warning(f"环境变量 {name}={raw!r} 无法转换为 {kind.__name__}，已忽略")
                continue
            section, key = path.split('.')
            overrides.setdefault(section, {})[key] = value
        return overrides

    def _merge_configs(self, yaml_config: Dict) -> Dict:
        """合并YAML配置和环境变量，环境变量优先级更高"""
        return _deep_merge(yaml_config, self._load_from_env())

    def _validate_config(self):
        """验证关键配置项"""
        level = str(self.get('logging.level', 'INFO')).upper()
        if level not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            logger.warning(f"警告：未知日志级别 {level}，使用 INFO")
            self.set('logging.level', 'INFO')
        if self.get('logging.format_type') not in ('text', 'json'):
            logger.warning(f"警告：LOG_FORMAT 只能是 text 或 json，实际 {self.get('logging.format_type')}")
            self.set('logging.format_type', 'text')
        if int(self.get('sweep.max_workers', 1)) < 1:
            logger.warning("警告：sweep.max_workers 必须 >= 1，使用 1")
            self.set('sweep.max_workers', 1)

    def get(self, key_path: str, default: Any = None) -> Any:
        """
        获取配置值，支持点号路径
        例如：get('output.dir') 获取 config['output']['dir']

        Args:
            key_path: 点号分隔的配置路径
            default: 默认值

        Returns:
            配置值或默认值
        """
        value = self._config
        try:
            for key in key_path.split('.'):
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key_path: str, value: Any):
        """
        设置配置值

        Args:
            key_path: 点号分隔的配置路径
            value: 要设置的值
        """
        keys = key_path.split('.')
        config = self._config
        for key in keys[:-1]:
            config = config.setdefault(key, {})
        config[keys[-1]] = value
        logger.debug(f"配置已更新: {key_path} = {value}")

    def get_logging_config(self) -> Dict[str, Any]:
        """获取日志配置"""
        return self.get('logging', {})

    def get_output_config(self) -> Dict[str, Any]:
        """获取输出配置"""
        return self.get('output', {})

    def get_network_config(self) -> Dict[str, Any]:
        """获取网络默认参数（BN eps / momentum）"""
        return self.get('network', {})

    def get_probe_config(self) -> Dict[str, Any]:
        return self.get('probe', {})

    def get_sweep_config(self) -> Dict[str, Any]:
        return self.get('sweep', {})

    def display_config(self):
        """打印当前配置"""
        logger.info(f"当前配置：\n{yaml.dump(self._config, allow_unicode=True, sort_keys=False)}")

