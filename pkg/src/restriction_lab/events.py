import logging

logger = logging.getLogger(__name__)


class LabEvents(object):
    """Subscriber lists fired around every experiment run."""

    def __init__(self):
        self.pre_run = []
        self.post_run = []
        self.teardown_run = []

    # Pre-run
    def on_pre_run(self, fn):
        self.pre_run.append(fn)

    def fire_pre_run(self, config):
        for fn in self.pre_run:
            try:
                fn(config)
            except Exception as e:
                logger.error(f"Error in pre-run event: {e}")
                raise

    # Teardown
    def on_teardown_run(self, fn):
        self.teardown_run.append(fn)

    # Post-run
    def on_post_run(self, fn):
        self.post_run.append(fn)

    def fire_post_run(self, config, result, exc):
        for fn in self.post_run:
            try:
                fn(config, result, exc)
            except Exception as e:
                logger.error(f"Error in post-run event: {e}")
                raise
