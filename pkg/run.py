"""
Run script for the LQG lab viewer.
This script starts the Gradio client and opens it in a browser.
"""

import os
import subprocess
import sys
import threading
import time
import webbrowser
from pathlib import Path


def ensure_directories():
    """Ensure all required directories exist."""
    directories = ["runs", "figures"]

    for directory in directories:
        dir_path = Path(directory)
        dir_path.mkdir(exist_ok=True)
        print(f"Ensured directory exists: {dir_path}")


def start_process(command):
    """Start a subprocess with stderr folded into its stdout pipe."""
    return subprocess.Popen(
        command,
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
        bufsize=1,
    )


def stream_output(process, prefix):
    """Stream the combined output of a subprocess with a prefix."""
    for line in iter(process.stdout.readline, ""):
        if line:
            print(f"{prefix}: {line.strip()}")


def main():
    # Make sure we're in the right directory
    script_dir = os.path.dirname(os.path.abspath(__file__))
    os.chdir(script_dir)
    print(f"Working directory set to: {os.getcwd()}")

    ensure_directories()

    print("Starting Gradio viewer...")
    client_process = start_process([sys.executable, "src/client.py"])

    client_thread = threading.Thread(target=stream_output, args=(client_process, "VIEWER"), daemon=True)
    client_thread.start()

    print("Gradio viewer process started with PID:", client_process.pid)
    time.sleep(1)
    if client_process.poll() is not None:
        print("ERROR: Gradio viewer failed to start!")
        client_thread.join(timeout=5)
        return

    print("Waiting for viewer to start...")
    time.sleep(6)

    print("Opening web browser...")
    port = os.environ.get("LAB_VIEWER_PORT", "7890")
    webbrowser.open(f"http://127.0.0.1:{port}")

    try:
        print("\nPress Ctrl+C to stop the viewer...\n")
        while True:
            if client_process.poll() is not None:
                print("WARNING: Gradio viewer stopped unexpectedly!")
                break
            time.sleep(1)
    except KeyboardInterrupt:
        print("\nStopping the viewer...")
        client_process.terminate()
        print("Viewer stopped.")


if __name__ == "__main__":
    main()
