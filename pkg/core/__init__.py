# Core engine modules
