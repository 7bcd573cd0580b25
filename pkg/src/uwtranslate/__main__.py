"""Allow running uwtranslate as a module: python -m uwtranslate"""

from uwtranslate.cli import main

if __name__ == "__main__":
    main()
