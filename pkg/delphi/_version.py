"""Package version."""
major = 0
minor = 1
word = "dev"

version = "{}.{}{}".format(major, minor, word)
