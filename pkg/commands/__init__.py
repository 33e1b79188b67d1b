# cmpslab command modules, registered by app.create_app()
