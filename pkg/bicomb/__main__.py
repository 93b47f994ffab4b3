from bicomb.main import cli

cli()
