import click
from flask.cli import FlaskGroup

from app import create_app


def _create_app():
    return create_app()


@click.group(cls=FlaskGroup, create_app=_create_app)
def cli():
    """Simulation-to-real robotics toolkit: servoing, rewards, depth and imitation."""


if __name__ == "__main__":
    cli()
