from pathlib import Path
from typing import Optional

from pydantic_settings import BaseSettings


class Config(BaseSettings):
    pretrained_encoder_path: Optional[Path] = None
    log_dir: Path = Path("log")
    log_level: str = "INFO"
    torch_threads: int = 1

    class Config:
        env_prefix = ""
        case_sensitive = False
        env_file = ".env"
        env_file_encoding = "utf-8"


config = Config()
