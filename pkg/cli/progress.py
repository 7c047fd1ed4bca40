"""
Terminal progress and status display for long sweeps.
"""
import sys

from tqdm import tqdm


class ProgressBar:
    """
    Progress bar on standard error, driven by (percent, message) callbacks.
    """
    def __init__(self, enabled=True, stream=None):
        """
        Args:
            enabled (bool): False turns every call into a no-op
            stream (file): Output stream, standard error by default
        """
        self.enabled = enabled
        self.stream = stream or sys.stderr
        self.bar = None
        self.status = "Ready"

    def start_operation(self, description=""):
        """
        Starts an operation, opening a fresh bar.

        Args:
            description (str): Label shown left of the bar
        """
        self.finish_operation()
        if self.enabled:
            self.bar = tqdm(total=100, desc=description, file=self.stream, leave=False,
                            bar_format="{desc} {bar} {n_fmt}% {postfix}")

    def set_progress(self, value, detailed_status=None):
        """
        Sets the progress bar value.

        Args:
            value (int): Progress value (0-100)
            detailed_status (str, optional): Detailed status
        """
        if self.bar is None:
            return
        value = max(0, min(100, int(value)))
        self.bar.update(value - self.bar.n)
        if detailed_status:
            self.bar.set_postfix_str(detailed_status)

    def set_status(self, text):
        """
        Sets the status text.

        Args:
            text (str): Status text
        """
        self.status = text
        if self.bar is not None:
            self.bar.set_description_str(text)

    def finish_operation(self):
        """
        Finishes an operation, closing the bar.
        """
        if self.bar is not None:
            self.bar.close()
            self.bar = None
        self.status = "Ready"
