# Helpers shared by the engines, the CLI and the API
