import argparse

from .app import serve


def main():
    parser = argparse.ArgumentParser(prog="enhancer-service")
    parser.add_argument("--backend", default="stub-identity")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8085)
    args = parser.parse_args()
    serve(backend=args.backend, host=args.host, port=args.port)


if __name__ == "__main__":
    main()
