# Makes this suite a package so its conftest cannot shadow the top-level
# conftest module the main suite imports helpers from.
