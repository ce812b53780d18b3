from jinja2 import Environment, PackageLoader, StrictUndefined


class Template(object):
    """Plain-text reports rendered from the package ``templates`` folder."""

    def __init__(self, package="restriction_lab", folder="templates"):
        self.env = Environment(loader=PackageLoader(package, folder), autoescape=False,
                               undefined=StrictUndefined, keep_trailing_newline=True)

    def render(self, template, data=None):
        return self.env.get_template(template).render(**(data or {}))
