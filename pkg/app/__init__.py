from flask import Flask
from app.config import config


def create_app(config_name="default"):
    app = Flask(__name__)
    app.config.from_object(config[config_name])

    # app.logger is the "app" logger, so package modules log through it
    config[config_name].init_app(app)

    from app.pnp_servo.commands import pnp_servo
    from app.rewards.commands import rewards
    from app.depth_aug.commands import depth_aug
    from app.dagger.commands import dagger

    app.register_blueprint(pnp_servo)
    app.register_blueprint(rewards)
    app.register_blueprint(depth_aug)
    app.register_blueprint(dagger)

    return app
