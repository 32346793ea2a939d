#!/usr/bin/env python3
"""
kmsgraph API runner
Starts the HTTP API; the command-line tool is `python -m app.cli`
"""

import sys
import subprocess
from dotenv import load_dotenv

load_dotenv()

from app.config import settings


def start_server():
    """Start the FastAPI server"""
    print(f"Starting kmsgraph API at http://{settings.HOST}:{settings.PORT}")
    print(f"API documentation: http://localhost:{settings.PORT}/docs")
    print("Press Ctrl+C to stop the server")
    print("-" * 50)

    try:
        subprocess.run([sys.executable, "-m", "app.main"], check=True)
    except KeyboardInterrupt:
        print("\nServer stopped.")
    except subprocess.CalledProcessError as e:
        print(f"Server failed to start: {e}")
        sys.exit(e.returncode)


if __name__ == "__main__":
    start_server()
