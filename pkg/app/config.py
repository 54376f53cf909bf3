import os
from dotenv import load_dotenv

load_dotenv()


class Config:
    OUTPUT_DIR = os.environ.get("TOOLKIT_OUTPUT_DIR") or "output"
    EXPERIMENT_FILE = os.environ.get("TOOLKIT_EXPERIMENT") or "configs/default.toml"
    DEFAULT_SEED = int(os.environ.get("TOOLKIT_SEED") or 0)

    LOG_LEVEL = os.environ.get("LOG_LEVEL") or "INFO"
    CSV_FLOAT_FORMAT = os.environ.get("CSV_FLOAT_FORMAT") or ".10g"

    # Process pool size for the sweep command
    SWEEP_WORKERS = int(os.environ.get("SWEEP_WORKERS") or 1)

    @staticmethod
    def init_app(app):
        app.logger.setLevel(app.config["LOG_LEVEL"])


class DevelopmentConfig(Config):
    DEBUG = True


class TestingConfig(Config):
    TESTING = True
    LOG_LEVEL = "WARNING"
    SWEEP_WORKERS = 1


class ProductionConfig(Config):
    DEBUG = False

    @classmethod
    def init_app(cls, app):
        Config.init_app(app)


config = {
    "development": DevelopmentConfig,
    "testing": TestingConfig,
    "production": ProductionConfig,
    "default": DevelopmentConfig,
}
