from .expcli.cli import main

raise SystemExit(main())
