"""Project test package marker to avoid third-party `tests` package shadowing."""
