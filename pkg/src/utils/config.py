"""
Модуль конфигурации стенда
"""
import yaml
from pathlib import Path
from typing import Dict, Any, Optional
from pydantic import Field
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Настройки приложения из переменных окружения"""
    output_dir: Optional[str] = Field(None, env='OUTPUT_DIR')
    jobs: Optional[int] = Field(None, env='JOBS')
    log_level: str = Field('INFO', env='LOG_LEVEL')
    
    class Config:
        env_file = str(Path(__file__).parent.parent.parent / '.env')
        env_file_encoding = 'utf-8'
        extra = 'ignore'


class ConfigLoader:
    """Загрузчик YAML-документа конфигурации и переменных окружения"""
    
    def __init__(self, config_path: str = 'config.yaml'):
        self.base_dir = Path(__file__).parent.parent.parent
        self.config_path = self.base_dir / config_path
        
        # Загрузка настроек из .env
        self.settings = Settings()
        
        # Загрузка конфигурации из YAML
        self.data = self.read_yaml(self.config_path) if self.config_path.exists() else {}
    
    @staticmethod
    def read_yaml(path) -> Dict[str, Any]:
        """Прочитать YAML-документ в словарь"""
        with open(path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
        return data or {}
    
    def get_output_dir(self) -> Path:
        """Каталог результатов: переменная окружения важнее YAML"""
        raw = self.settings.output_dir or self.data.get('output_dir', 'data/runs')
        path = Path(raw)
        return path if path.is_absolute() else self.base_dir / path
    
    def get_jobs(self) -> int:
        """Ширина пула воркеров"""
        return int(self.settings.jobs or self.data.get('jobs', 1))


# Глобальный экземпляр конфигурации
config = ConfigLoader()
