import csv
import os
import sys
import threading
from datetime import datetime, timezone

EVENTS_FILENAME = "run_events.csv"
EVENT_HEADER = ['timestamp', 'event_type', 'subject', 'details', 'severity']


class EventLogger:
    def __init__(self, out_dir, tag=None, quiet=False):
        self.out_dir = out_dir
        self.tag = tag
        self.quiet = quiet
        self.events_log = out_dir / EVENTS_FILENAME
        out_dir.mkdir(parents=True, exist_ok=True)

        # Append mode: one file collects every command run in this directory
        self.events_file = open(self.events_log, 'a', newline='', encoding='utf-8')
        self.events_writer = csv.writer(self.events_file)
        self._lock = threading.Lock()

        # Only write the header if the file is empty (size 0)
        if os.stat(self.events_log).st_size == 0:
            self.events_writer.writerow(EVENT_HEADER)
            self.events_file.flush()

    def log_event(self, event_type, subject, details, severity="INFO"):
        timestamp = datetime.now(timezone.utc).isoformat(timespec='milliseconds')
        with self._lock:
            self.events_writer.writerow([timestamp, event_type, subject, details, severity])
            self.events_file.flush()

    def status(self, message):
        """Tagged console line, e.g. '[CORR] 12 matrices written'"""
        if not self.quiet:
            print(f"[{self.tag}] {message}" if self.tag else message)

    def warning(self, event_type, subject, details):
        self.log_event(event_type, subject, details, severity="WARNING")
        print(f"[{self.tag}] WARNING: {details}", file=sys.stderr)

    def error(self, event_type, subject, details):
        self.log_event(event_type, subject, details, severity="ERROR")
        print(f"[{self.tag}] ERROR: {details}", file=sys.stderr)

    def close_files(self):
        if self.events_file and not self.events_file.closed:
            self.events_file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close_files()
        return False
