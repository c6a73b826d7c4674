# Diagnostic scripts
